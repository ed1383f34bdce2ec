# Coverage harness - vectors, scenarios, certificate, fuzzing
