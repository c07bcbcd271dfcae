from scripts import run
import scripts.run
import pandas
