"""ABS braking simulator with an isolated runtime monitor.

cyfence simulates a wheel-slip PID controller braking a single corner of a
vehicle, lets an attacker tamper with the controller, and checks the loop
from a secure side that owns the design-time parameters.

The secure side bounds the measured slip with an exponential envelope
derived from the loop phase margin and crossover frequency, watches the
loop deadline, and switches to an unmodified backup controller when either
check fails.

Scenarios are TOML files; runs produce CSV logs.
"""
