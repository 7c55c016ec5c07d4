# heatframe: heat-kernel frames and Besov / Triebel-Lizorkin numerics
