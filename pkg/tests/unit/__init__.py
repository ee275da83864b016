# Unit tests package for graphdream
