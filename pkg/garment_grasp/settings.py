"""
Django settings for the garment_grasp project.

The web layer is limited to the admin, where training runs and evaluation
reports can be browsed. Everything else is driven through management commands.
"""

from pathlib import Path
import os

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get('GRASPALL_SECRET_KEY', 'django-insecure-garment-grasp-local-only')

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = os.environ.get('GRASPALL_DEBUG', '0') == '1'

ALLOWED_HOSTS = ['localhost', '127.0.0.1']


# Application definition

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',
    'rest_framework',
    'perception',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'garment_grasp.urls'

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


# Database
# https://docs.djangoproject.com/en/4.2/ref/settings/#databases

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


# Static files (admin only)

STATIC_URL = 'static/'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Logging

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'perception': {
            'handlers': ['console'],
            'level': os.environ.get('GRASPALL_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}


# Pipeline defaults. A config file passed to a management command may override
# any of these keys; unknown keys are rejected.

GRASPALL_DEFAULTS = {
    # luminance curve bank
    'n_curves': 12,
    'n_points': 256,
    'tau': 0.1,
    'plc_lr': 0.01,
    # response libraries
    'alpha': 0.05,
    # fusion network
    'channels': 16,
    'patch': 8,
    'classes': 9,
    'lr': 0.01,
    'epochs': 10,
    'loss_weight_sc': 1.0,
    'loss_weight_l1': 1.0,
    'loss_weight_bce': 1.0,
    'loss_weight_ce': 1.0,
    'variant': 'full',
    # image processing
    'canny_sigma': 1.4,
    'canny_low': 0.1,
    'canny_high': 0.3,
    'bilateral_window': 5,
    'bilateral_sigma_s': 2.0,
    'bilateral_sigma_i': 0.1,
    'retinex_sigma': 2.0,
    'enhance_depth': True,
    # grasp search
    'grasp_k_fraction': 0.01,
    # domain adaptation
    'fda_beta': 0.01,
    # synthetic corpus
    'scene_width': 64,
    'scene_height': 64,
    'num_scenes': 20,
    'levels': '1.0,0.85,0.7,0.55',
    'max_garments': 4,
    'depth_noise_sigma': 0.0,
    'depth_hole_fraction': 0.0,
    # parallel per-scene work; reductions keep a fixed order
    'workers': 1,
}

GARMENT_CLASSES = {
    0: 'background',
    1: 'glove',
    2: 'hat',
    3: 'scarf',
    4: 'sock',
    5: 'tie',
    6: 'top',
    7: 'trousers',
    8: 'brief',
}
