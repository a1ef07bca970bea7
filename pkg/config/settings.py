from pathlib import Path
import environ
import os

# Base directory
BASE_DIR = Path(__file__).resolve().parent.parent

# Initialize environment reader
env = environ.Env(
    DEBUG=(bool, False),
    SECRET_KEY=(str, "unsafe-default"),
    TIME_ZONE=(str, "UTC"),
    LOG_LEVEL=(str, "INFO"),
    TRAJFORGE_WORKERS=(int, os.cpu_count() or 1),
    TRAJFORGE_ELLIPSOID_A=(float, 6378137.0),
    TRAJFORGE_ELLIPSOID_E=(float, 0.0818191908426),
    TRAJFORGE_STANDARD_PARALLEL_DEG=(float, 0.0),
    TRAJFORGE_GAP_SECONDS=(float, 3600.0),
    TRAJFORGE_BLOCK_WIDTH=(int, 32),
    TRAJFORGE_BLOCK_HEIGHT=(int, 32),
    TRAJFORGE_GRID=(str, "1024x1024"),
    TRAJFORGE_KERNEL=(str, "gaussian"),
    TRAJFORGE_BANDWIDTH=(int, 7),
    TRAJFORGE_EPSILON_GRID=(list, ["0.1", "0.5", "1.0", "5.0", "10.0"]),
    TRAJFORGE_BENCH_RUNS=(int, 30),
)

# Read .env file if present
environ.Env.read_env(os.path.join(BASE_DIR, ".env"))

# Core settings
DEBUG = env("DEBUG")
SECRET_KEY = env("SECRET_KEY")

# Application definition
# Management commands are the only surface; no middleware, urls or admin.

INSTALLED_APPS = [
    'core',
    'geo',
    'trajectories',
    'primitives',
    'compression',
    'density',
    'metrics',
]

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        "DIRS": [BASE_DIR / "templates"],  # plain-text report layouts
        'APP_DIRS': True,
        'OPTIONS': {
            'autoescape': False,
        },
    },
]

# Trajectories live in CSV files; nothing is persisted in a database.
DATABASES = {}

# Internationalization
LANGUAGE_CODE = "en-us"
TIME_ZONE = env("TIME_ZONE")
USE_I18N = False
USE_TZ = True

# Logging: diagnostics go to stderr, data goes to files/stdout only.
LOG_LEVEL = env("LOG_LEVEL").upper()

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{asctime} {levelname} {name} {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
            "formatter": "verbose",
        },
    },
    "loggers": {
        app: {"handlers": ["console"], "level": LOG_LEVEL, "propagate": False}
        for app in INSTALLED_APPS
    },
}

# Default ellipsoid is WGS-84 with the equator as standard parallel.
TRAJFORGE_ELLIPSOID_A = env("TRAJFORGE_ELLIPSOID_A")
TRAJFORGE_ELLIPSOID_E = env("TRAJFORGE_ELLIPSOID_E")
TRAJFORGE_STANDARD_PARALLEL_DEG = env("TRAJFORGE_STANDARD_PARALLEL_DEG")

# A same-MMSI gap longer than this opens a new trajectory.
TRAJFORGE_GAP_SECONDS = env("TRAJFORGE_GAP_SECONDS")

# Worker pool size; --workers overrides it.
TRAJFORGE_WORKERS = env("TRAJFORGE_WORKERS")

# Scan block layout B = W x H. No warp constraint on CPU, tunable.
TRAJFORGE_BLOCK_WIDTH = env("TRAJFORGE_BLOCK_WIDTH")
TRAJFORGE_BLOCK_HEIGHT = env("TRAJFORGE_BLOCK_HEIGHT")

# Density map defaults: 1024x1024 grid, Gaussian 7x7 kernel.
TRAJFORGE_GRID = env("TRAJFORGE_GRID")
TRAJFORGE_KERNEL = env("TRAJFORGE_KERNEL")
TRAJFORGE_BANDWIDTH = env("TRAJFORGE_BANDWIDTH")

TRAJFORGE_EPSILON_GRID = [float(e) for e in env.list("TRAJFORGE_EPSILON_GRID")]
TRAJFORGE_BENCH_RUNS = env("TRAJFORGE_BENCH_RUNS")

# Points merged into one parallel compression pass. Auxiliary buffers are
# allocated once with max(this, longest trajectory) slots.
TRAJFORGE_BATCH_POINTS = env.int("TRAJFORGE_BATCH_POINTS", default=262144)
