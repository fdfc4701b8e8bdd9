"""
WSGI config for Annealab project.

Serves the admin over the experiment run registry; the experiments
themselves run through the management commands.
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'annealab.settings')

application = get_wsgi_application()
