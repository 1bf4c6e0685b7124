# Test package for the F-RAN latency simulator
