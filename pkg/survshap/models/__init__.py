"""
Models module

Survival models behind the ``AbstractSurvivalModel`` interface:
- cox.py contains the Cox Proportional Hazards model
- forest.py contains the Random Survival Forest
"""

from .cox import CoxModel, cox_fit
from .forest import RandomSurvivalForest, rsf_fit
from .model import AbstractSurvivalModel

__all__ = ["AbstractSurvivalModel", "CoxModel", "cox_fit", "RandomSurvivalForest", "rsf_fit"]
