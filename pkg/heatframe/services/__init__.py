# Services package for heatframe
