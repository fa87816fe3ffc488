# Neural CTMC Package
