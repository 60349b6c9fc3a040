from .base import *

DEBUG = True

# Desk runs record their history in a local SQLite file
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'cmbn_runs.sqlite3',
    }
}
