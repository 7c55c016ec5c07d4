# Models package for heatframe
