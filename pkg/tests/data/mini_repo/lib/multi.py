import lib.external; import lib.legacy
from app.models import (User,
                        Group)
