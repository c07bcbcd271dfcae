from app.core import *
from app.util.numbers import add


def check():
    assert add(1, 2) == 3
