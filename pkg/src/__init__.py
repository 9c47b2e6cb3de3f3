"""
xmd library: numeric engine, models, losses, data, evaluation and run harness
"""
