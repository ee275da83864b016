# Integration tests: pipelines and command line
