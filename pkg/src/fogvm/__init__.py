"""Power-minimal VM placement over federated fog cells linked by a WDM-PON."""
