from hypothesis import HealthCheck, settings

# single-core container: wall-clock per example is noisy, so no deadlines
settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")
