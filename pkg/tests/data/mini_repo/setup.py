from setuptools import setup
import app

setup(name="mini")
