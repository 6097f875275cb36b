# ABOUTME: Experiment harnesses for mvpreg.
# ABOUTME: Evaluation metrics, simulation generator and the trading backtest.
