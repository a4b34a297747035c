"""MLUFL solver toolkit"""
