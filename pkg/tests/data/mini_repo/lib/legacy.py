# import app.core
VALUE = 1
