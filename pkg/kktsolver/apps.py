from django.apps import AppConfig
import logging

logger = logging.getLogger(__name__)


class KktsolverConfig(AppConfig):
    name = 'kktsolver'
    verbose_name = 'KKT saddle-point solver'

    def ready(self):
        """Report the dense-oracle limits once when the app is loaded"""
        from django.conf import settings

        logger.debug(
            f"kktsolver ready: dense limit {settings.KKT_DENSE_MAX_DIM}, "
            f"eigcheck limit {settings.KKT_EIGCHECK_MAX_DIM}, "
            f"ideal preconditioner limit {settings.KKT_IDEAL_MAX_DIM}, "
            f"coarse cells {settings.KKT_COARSE_CELLS}"
        )
