"""
URL configuration for Annealab project.
Only the admin is served; it browses the experiment run registry.
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]
