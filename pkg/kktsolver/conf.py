"""Access to project settings with library-safe fallbacks."""

from typing import Any


def get_setting(name: str, default: Any) -> Any:
    """
    Read a KKT_* setting from django.conf.settings.

    Falls back to `default` when Django is not configured, so the numerical
    modules can be imported and called outside a project context.
    """
    from django.conf import settings

    if not settings.configured:
        return default
    return getattr(settings, name, default)
