from hypothesis import settings

# property tests build whole forwarder states per example; the default
# per-example deadline is too twitchy for that
settings.register_profile("suite", deadline=None)
settings.load_profile("suite")
