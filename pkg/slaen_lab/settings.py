"""
Django settings for the slaen_lab project.

Holds the process-level configuration of the sensor-network simulator:
database/cache wiring for experiment records, logging, and the numerical
defaults (Fock cutoffs, tolerances, quadrature orders) that the services in
``sensing.services`` read through ``django.conf.settings``.

For the full list of Django settings and their values, see
https://docs.djangoproject.com/en/3.2/ref/settings/
"""

import os
from pathlib import Path

import environ

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Environment variables
env = environ.Env(
    DEBUG=(bool, False),
    DATABASE_URL=(str, 'sqlite:///db.sqlite3'),
    CACHE_URL=(str, 'locmemcache://'),
    LOG_LEVEL=(str, 'INFO'),
)
environ.Env.read_env(BASE_DIR / '.env')


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = env('SECRET_KEY', default='django-insecure-slaen-lab-local-development-key')

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = env('DEBUG')

ALLOWED_HOSTS = env.list('ALLOWED_HOSTS', default=['localhost', '127.0.0.1'])


# Application definition

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',
    'rest_framework',
    'corsheaders',
    'sensing',
]

MIDDLEWARE = [
    'corsheaders.middleware.CorsMiddleware',
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'slaen_lab.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.debug',
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

WSGI_APPLICATION = 'slaen_lab.wsgi.application'


# Database
# https://docs.djangoproject.com/en/3.2/ref/settings/#databases

DATABASES = {
    'default': env.db()
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_L10N = True

USE_TZ = True


# Static files (CSS, JavaScript, Images)

STATIC_URL = '/static/'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Cache Configuration (rediscache://host:6379/0 selects django-redis)
CACHES = {
    'default': env.cache('CACHE_URL')
}

# CORS Configuration
CORS_ALLOW_ALL_ORIGINS = env.bool('CORS_ALLOW_ALL_ORIGINS', default=DEBUG)

# REST Framework Configuration
REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
    ],
    'DEFAULT_PAGINATION_CLASS': 'rest_framework.pagination.PageNumberPagination',
    'PAGE_SIZE': 20
}

# Experiment runner configuration
SLAEN_OUTPUT_DIR = env('SLAEN_OUTPUT_DIR', default=str(BASE_DIR / 'runs'))
SLAEN_WORKERS = env.int('SLAEN_WORKERS', default=os.cpu_count() or 1)
SLAEN_ENV_PREFIX = 'SLAEN__'
SLAEN_SCHEMA_VERSION = 1
CACHE_TTL = 3600  # 1 hour in seconds

# Fock-space simulation defaults
FOCK_CUTOFF = env.int('FOCK_CUTOFF', default=30)
FOCK_CUTOFF_MAX = env.int('FOCK_CUTOFF_MAX', default=60)
FOCK_CUTOFF_STEP = 10
LEAKAGE_TOLERANCE = env.float('LEAKAGE_TOLERANCE', default=1e-8)
UNITARITY_TOLERANCE = env.float('UNITARITY_TOLERANCE', default=1e-8)
HERMITICITY_TOLERANCE = env.float('HERMITICITY_TOLERANCE', default=1e-12)
NORM_TOLERANCE = env.float('NORM_TOLERANCE', default=1e-10)

# Task and noise defaults
CIRCLE_TRAIN_ATOMS = env.int('CIRCLE_TRAIN_ATOMS', default=32)
CIRCLE_VALIDATION_ATOMS = env.int('CIRCLE_VALIDATION_ATOMS', default=128)
GAUSSIAN_NODES_PER_AXIS = env.int('GAUSSIAN_NODES_PER_AXIS', default=7)
NOISE_QUADRATURE_NODES = env.int('NOISE_QUADRATURE_NODES', default=15)
NOISE_QUADRATURE_TOLERANCE = env.float('NOISE_QUADRATURE_TOLERANCE', default=1e-8)
NOISE_MAX_COVARIANCE = env.float('NOISE_MAX_COVARIANCE', default=0.02)

# Training defaults
FD_STEP = env.float('FD_STEP', default=1e-5)
ZERO_ERROR_TOLERANCE = env.float('ZERO_ERROR_TOLERANCE', default=1e-8)
ENERGY_FEASIBILITY_TOLERANCE = env.float('ENERGY_FEASIBILITY_TOLERANCE', default=1e-3)

# Logging Configuration
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
        'file': {
            'class': 'logging.FileHandler',
            'filename': env('LOG_FILE', default=str(BASE_DIR / 'slaen.log')),
            'formatter': 'verbose',
            'delay': True,
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'sensing': {
            'handlers': ['console', 'file'],
            'level': env('LOG_LEVEL'),
            'propagate': False,
        },
        'django': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': False,
        },
    },
}
