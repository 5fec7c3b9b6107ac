"""One module per predsched sub-command."""
