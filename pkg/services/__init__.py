"""Scheduling engines: model, simulator, policies, error measures, learning and experiments."""
