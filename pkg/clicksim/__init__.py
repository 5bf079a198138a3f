from clicksim.config import *
from clicksim.data_processor import *
from clicksim.numkernel import *
from clicksim.utils import *
from clicksim.pgm import *
from clicksim.policy import *
from clicksim.critic import *
from clicksim.metrics import *
from clicksim.model_trainer import *
from clicksim.model_builder import *
from clicksim.oracle import *

__version__ = "2026.10.17"
