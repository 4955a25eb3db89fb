"""Fixed strings shared by prompt rendering and turn parsing."""

REPL_OPEN = "<repl>"
REPL_CLOSE = "</repl>"
OBSERVATION_PREFIX = "Observation:"
REASONING_OPEN = "<think>"
REASONING_CLOSE = "</think>"
