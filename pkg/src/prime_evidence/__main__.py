from prime_evidence.cli import main

main()
