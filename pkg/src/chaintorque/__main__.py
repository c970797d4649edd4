from chaintorque.cli import main

main()
