# -*- coding: utf-8 -*-
"""Toolbox for learning, pruning and evaluating trigger-based causal trees."""

__author__ = """trigtree developers"""
__version__ = '0.3.0'
