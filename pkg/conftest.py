import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'control_bench.settings')
django.setup()
