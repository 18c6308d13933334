"""File formats for frames, fitted parameters, feature tables and forests."""
