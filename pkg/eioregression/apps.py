from django.apps import AppConfig

class EioRegressionConfig(AppConfig):
    name = "eioregression"
    verbose_name = "Error-in-operator regression"
