# app/main.py
from fastapi import FastAPI
from app.routes.phantoms import router as phantoms_router
from app.routes.projections import router as projections_router
from app.routes.reconstructions import router as reconstructions_router
from app.routes.enumerations import router as enumerations_router

app = FastAPI(
    title="Binary Tomography Dual API",
    description="Phantoms, projections, dual-formulation reconstructions and enumeration checks for binary tomography",
    version="1.0.0",
    openapi_tags=[
        {
            "name": "Phantoms",
            "description": "Analytic binary test images"
        },
        {
            "name": "Projections",
            "description": "Lattice and parallel-beam forward projection with optional noise"
        },
        {
            "name": "Reconstructions",
            "description": "Dual-problem reconstruction and the LSQR and TV baselines"
        },
        {
            "name": "Enumerations",
            "description": "Exhaustive small-image enumeration and dual recovery checks"
        }
    ]
)

# Include the routers
app.include_router(phantoms_router)
app.include_router(projections_router)
app.include_router(reconstructions_router)
app.include_router(enumerations_router)

@app.get("/health")
async def health():
    return {"status": "ok"}

def run_dev():
    """Run the app in development mode."""
    import uvicorn
    uvicorn.run("app.main:app", host="0.0.0.0", port=8000, reload=True)
