"""Reactive LTL task planning with product-automaton search and
dynamically reconfigurable behavior trees."""

__version__ = "0.1.0"
