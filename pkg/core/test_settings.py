from core.settings import *  # Import all defaults

# Always debug in tests
DEBUG = True

# Use SQLite in memory for speed
DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": ":memory:",
    }
}

# Background tasks disabled (RQ nicht nötig)
RQ_QUEUES = {}

# Curvature runs inline in tests unless a test asks for a pool
CUSP_WORKERS = 1

# keep pytest output readable; records still reach caplog
LOGGING["loggers"].update(
    {app: {"handlers": [], "level": "WARNING", "propagate": True}
     for app in ("core", "graphs", "curvature", "manifolds", "filters", "cusp")}
)
