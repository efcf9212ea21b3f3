"""ctro — a Certificate Transparency root-store observatory.

Collects the acceptable-root lists of CT logs over the RFC 6962 HTTP API,
snapshots them over time, compares them against each other and against
vendor trust stores, probes live submission behavior, and flags root-list
mismanagement indicators.
"""

__version__ = "0.1.0"
