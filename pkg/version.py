"""Version numbers."""
SMDLAB_VERSION = (0, 3, 0)
