# app/main.py

import logging
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from app.config import Config
from app.api import router

# --- LOGGING CONFIGURATION ---
logging.basicConfig(
    level=getattr(logging, Config.LOG_LEVEL, logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

# --- INITIALIZATION ---
app = FastAPI(
    title="Inclusion Audit API",
    description="Black-box verification of financial-model outputs by inclusion analysis",
    version=Config.VERSION
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=False,
    allow_methods=["GET", "POST", "OPTIONS"],
    allow_headers=["*"],
    max_age=600
)

app.include_router(router)


@app.on_event("startup")
async def startup_event():
    """Log the effective engine settings on startup."""
    logger.info("Starting Inclusion Audit API...")
    logger.info(f"Environment: {Config.ENVIRONMENT}")
    logger.info(f"Host: {Config.HOST}:{Config.PORT}")
    try:
        Config.validate()
        logger.info("Engine settings are valid")
    except ValueError as e:
        logger.error(f"Configuration validation failed: {e}")
