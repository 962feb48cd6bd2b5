"""
rfso: performance evaluation of dual-hop RF/FSO amplify-and-forward links
with partial relay selection, outdated CSI and hardware impairments.
"""

__version__ = "0.3.0"
