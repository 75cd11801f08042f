"""Problem zoo: one problem class per module, discovered by ``smdlab.problems``."""
