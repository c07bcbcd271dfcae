from app.models import User
from app import core, models
