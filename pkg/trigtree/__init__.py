# -*- coding: utf-8 -*-
"""Top-level package for trigtree: trigger-based causal trees."""

__author__ = """trigtree developers"""
