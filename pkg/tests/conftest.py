from hypothesis import settings

settings.register_profile("ci", max_examples=50, derandomize=True)
settings.load_profile("ci")
