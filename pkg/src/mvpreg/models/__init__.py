# ABOUTME: Numerical core of mvpreg.
# ABOUTME: Matrix-variate distributions, kernels, MV-GPR/MV-TPR and the optimizer.
