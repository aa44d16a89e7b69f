"""tensarm: simulation and shape control of gyroscopic tensegrity arms."""

__version__ = "0.1.0"
