# Empty file to mark src as a Python package
