import os

from hypothesis import HealthCheck, settings

# property tests call ODE/quadrature routines that are slow per example;
# cap examples and disable the too-slow health check so CI stays bounded
settings.register_profile(
    "bogoscope",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "bogoscope"))
