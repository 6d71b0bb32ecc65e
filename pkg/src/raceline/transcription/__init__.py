"""Transcription of raceline problems into nonlinear programs."""

from .gates import Gate, GateError
from .models import POINT_MASS, QUADROTOR, VehicleModel
from .nlp import NlpBuilder, NlpProblem
from .schemes import CollocationScheme, GaussLegendre, SchemeError, collocate_element, gauss_legendre, shoot_element_rk4
