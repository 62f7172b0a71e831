"""Fixed-kernel U-statistics, random geometric graph counts and the OU quadratic functional."""
