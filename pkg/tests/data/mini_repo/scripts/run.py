import sys
import app.views


def main():
    import app.core as core
    return core.run(), sys.argv
