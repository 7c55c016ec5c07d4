# Tests package for heatframe
