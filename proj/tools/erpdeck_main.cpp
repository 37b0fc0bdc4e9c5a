// Placeholder until the C API lands; replaced by the full CLI.
int main() { return 0; }
