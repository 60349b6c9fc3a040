from .base import *

DEBUG = False

# Make sure to set real secrets in production
SECRET_KEY = os.environ["DJANGO_SECRET_KEY"]

# Long runs write logs next to the shared results volume
CMBN_LOG_DIR = Path(os.environ.get("CMBN_LOG_DIR", "/var/log/compressive_mbn"))
