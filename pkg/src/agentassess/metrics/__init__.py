# Deliberately empty: checks.py imports lazily from metrics.tools, so this
# package root must not import submodules (they import checks right back).
