import os
from pathlib import Path
from dotenv import load_dotenv

BASE_DIR = Path(__file__).resolve().parent.parent
dotenv_path = BASE_DIR / ".env"
if dotenv_path.exists():
    load_dotenv(dotenv_path)

SECRET_KEY = os.getenv("SECRET_KEY", "changeme")
DEBUG = os.getenv("DEBUG", "True") == "True"
ALLOWED_HOSTS = []

INSTALLED_APPS = [
    "rest_framework",
    "eioregression",
]

LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"
USE_I18N = True
USE_TZ = True

# Experiment outputs land here when neither --out nor the config names a directory.
EIO_OUT_DIR = os.getenv("EIO_OUT_DIR", "")
EIO_WORKERS = int(os.getenv("EIO_WORKERS", "1"))
EIO_LOG_LEVEL = os.getenv("EIO_LOG_LEVEL", "INFO")

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "line": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "line"},
    },
    "loggers": {
        "eioregression": {
            "handlers": ["console"],
            "level": EIO_LOG_LEVEL,
            "propagate": False,
        },
    },
}
