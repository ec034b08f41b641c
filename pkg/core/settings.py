from pathlib import Path
import os
from dotenv import load_dotenv


load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get("SECRET_KEY", default="cusp-local-only")

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = os.environ.get("DEBUG", "False").lower() in ("true", "1", "yes")
ALLOWED_HOSTS = []


# Application definition
INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "django_rq",
    "graphs.apps.GraphsConfig",
    "curvature.apps.CurvatureConfig",
    "manifolds.apps.ManifoldsConfig",
    "filters.apps.FiltersConfig",
    "cusp.apps.CuspConfig",
]

DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": os.environ.get("DB_PATH", default=str(BASE_DIR / "db.sqlite3")),
    }
}

RQ_QUEUES = {
    "default": {
        "HOST": os.environ.get("REDIS_HOST", default="localhost"),
        "PORT": int(os.environ.get("REDIS_PORT", default=6379)),
        "DB": int(os.environ.get("REDIS_DB", default=0)),
        "DEFAULT_TIMEOUT": 3600,
        "REDIS_CLIENT_KWARGS": {},
    },
}

LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


# Logging
CUSP_LOG_LEVEL = os.environ.get("CUSP_LOG_LEVEL", default="INFO").upper()

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "{asctime} {levelname} {name}: {message}", "style": "{"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "plain"},
    },
    "loggers": {
        **{
            app: {"handlers": ["console"], "level": CUSP_LOG_LEVEL, "propagate": False}
            for app in ("core", "graphs", "curvature", "manifolds", "filters", "cusp")
        },
        "rq.worker": {"handlers": ["console"], "level": "INFO"},
    },
}


# Curvature pipeline
# worker processes for per-edge curvature (1 = inline)
CUSP_WORKERS = int(os.environ.get("CUSP_WORKERS", default=1))

# flat config keys and their defaults; config files may only set these keys
CUSP_DEFAULTS = {
    "orc.delta": 0.5,
    "orc.method": "exact",
    "orc.sinkhorn_eps": 0.0,  # 0 -> 0.01 * median support distance
    "orc.sinkhorn_max_iters": 1000,
    "orc.sinkhorn_tol": 1e-9,
    "orc.normalize": True,
    "orc.histogram_bins": 40,
    "signature.spec": "",
    "signature.eps": 0.05,
    "signature.h_max": 2,
    "signature.s_max": 2,
    "signature.preferred_dims": "",
    "signature.restarts": 50,
    "model.d_m": 48,
    "model.d_c": 16,
    "model.d_pool": 16,
    "model.L": 10,
    "model.alpha": 0.3,
    "model.gpr_init": "ppr",
    "model.activation": "relu",
    "model.pooling": True,
    "model.filter_bank": True,
    "model.train_gamma": True,
    "model.train_curvature": True,
    "model.sigma": 1.0,
    "model.lp_radius": 2.0,
    "model.lp_temperature": 1.0,
    "train.task": "nc",
    "train.lr": 4e-3,
    "train.epochs": 100,
    "train.weight_decay": 5e-4,
    "train.dropout": 0.3,
    "train.seed": 0,
    "train.split": "auto",
    "train.repeats": 1,
}
