// Placeholder main; the real command surface lands with the cli module.
int main() { return 0; }
