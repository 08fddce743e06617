import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "eiolab.settings")
django.setup()
