"""
Explain module

- shap.py contains the SurvSHAP(t) estimators (exact, sampling and kernel)
- survlime.py contains the SurvLIME surrogate explanation
"""
