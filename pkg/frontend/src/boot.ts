import { initApp } from "./main";

initApp(document);
