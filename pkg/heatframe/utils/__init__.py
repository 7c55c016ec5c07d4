# Utilities package for heatframe
