"""
Services

Business logic packages: tensor primitives, the network, dataset handling,
training, evaluation and inference fusion.
"""
