# Robust-AM package initialization
