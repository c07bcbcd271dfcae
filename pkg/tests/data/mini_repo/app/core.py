"""Core logic."""
import os
import app.models
from app.util import strings
import numpy as np


def run():
    return os.getcwd(), strings, np
